#include "tsmq/net.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

using nlohmann::json;

namespace tsmq {

namespace {

constexpr int kHidden = 128;
constexpr double kLayerNormEpsilon = 1e-5;

// mt19937_64 driven uniform in [0,1); avoids distribution objects so the
// stream is identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    std::uint64_t next() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

void fill_uniform(Eigen::MatrixXd& m, Rng& rng, double radius)
{
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            m(r, c) = (2.0 * rng.unit() - 1.0) * radius;
}

LayerParams init_layer(Rng& rng, int in_dim, int out_dim)
{
    LayerParams layer;
    layer.weights.resize(out_dim, in_dim);
    fill_uniform(layer.weights, rng, 1.0 / std::sqrt(static_cast<double>(in_dim)));
    layer.bias = Eigen::VectorXd::Zero(out_dim);
    layer.gain = Eigen::VectorXd::Ones(out_dim);
    layer.offset = Eigen::VectorXd::Zero(out_dim);
    return layer;
}

struct LayerCache {
    Eigen::MatrixXd pre_norm;   // z
    Eigen::MatrixXd normalized; // (z - mu) / sigma
    Eigen::VectorXd inv_sigma;  // per row
    Eigen::MatrixXd activated;  // relu(ln(z))
};

struct ForwardCache {
    Eigen::MatrixXd input;
    LayerCache l1, l2, l3;
    Eigen::MatrixXd h1, h2, h3; // block outputs including residuals
    Eigen::VectorXd logits;
    Eigen::VectorXd output;
};

void layer_forward(const LayerParams& p, const Eigen::MatrixXd& x, LayerCache& cache)
{
    cache.pre_norm = x * p.weights.transpose();
    cache.pre_norm.rowwise() += p.bias.transpose();

    const Eigen::Index n = cache.pre_norm.rows();
    const Eigen::Index h = cache.pre_norm.cols();
    cache.normalized.resize(n, h);
    cache.inv_sigma.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto row = cache.pre_norm.row(r);
        const double mu = row.mean();
        const double var = (row.array() - mu).square().mean();
        const double inv = 1.0 / std::sqrt(var + kLayerNormEpsilon);
        cache.inv_sigma(r) = inv;
        cache.normalized.row(r) = (row.array() - mu) * inv;
    }
    Eigen::MatrixXd affine = cache.normalized * p.gain.asDiagonal();
    affine.rowwise() += p.offset.transpose();
    cache.activated = affine.cwiseMax(0.0);
}

ForwardCache forward_cached(const ModelParams& m, const Eigen::MatrixXd& x)
{
    ForwardCache c;
    c.input = x;
    layer_forward(m.layer1, x, c.l1);
    c.h1 = c.l1.activated;
    layer_forward(m.layer2, c.h1, c.l2);
    c.h2 = c.h1 + c.l2.activated;
    layer_forward(m.layer3, c.h2, c.l3);
    c.h3 = c.h2 + c.l3.activated;
    c.logits = c.h3 * m.head_weights;
    c.logits.array() += m.head_bias;
    c.output = (1.0 / (1.0 + (-c.logits.array()).exp())).matrix();
    return c;
}

// Grad through relu -> layer norm -> affine. Returns the gradient with
// respect to the layer input; fills the layer's parameter gradients.
Eigen::MatrixXd layer_backward(const LayerParams& p, const LayerCache& cache,
                               const Eigen::MatrixXd& input, const Eigen::MatrixXd& d_activated,
                               LayerGradients& grads)
{
    // relu mask on the post-activation values
    const Eigen::MatrixXd mask = (cache.activated.array() > 0.0).cast<double>();
    const Eigen::MatrixXd d_ln = d_activated.cwiseProduct(mask);

    grads.gain = d_ln.cwiseProduct(cache.normalized).colwise().sum().transpose();
    grads.offset = d_ln.colwise().sum().transpose();

    // layer norm backward, per row
    const Eigen::MatrixXd d_xhat = d_ln * p.gain.asDiagonal();
    const Eigen::Index n = d_xhat.rows();
    Eigen::MatrixXd d_z(n, d_xhat.cols());
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto dx = d_xhat.row(r).array();
        const auto xh = cache.normalized.row(r).array();
        const double mean_dx = dx.mean();
        const double mean_dx_xh = (dx * xh).mean();
        d_z.row(r) = (cache.inv_sigma(r) * (dx - mean_dx - xh * mean_dx_xh)).matrix();
    }

    grads.weights = d_z.transpose() * input;
    grads.bias = d_z.colwise().sum().transpose();
    return d_z * p.weights;
}

ModelGradients backward(const ModelParams& m, const ForwardCache& c, const Eigen::VectorXd& targets)
{
    const Eigen::Index n = c.output.size();
    const double rmse =
        std::sqrt((c.output - targets).squaredNorm() / static_cast<double>(n));

    ModelGradients g;
    Eigen::VectorXd d_out;
    if (rmse > 0.0) {
        d_out = (c.output - targets) / (static_cast<double>(n) * rmse);
    } else {
        d_out = Eigen::VectorXd::Zero(n);
    }
    const Eigen::VectorXd d_logits =
        d_out.array() * c.output.array() * (1.0 - c.output.array());

    g.head_weights = c.h3.transpose() * d_logits;
    g.head_bias = d_logits.sum();

    Eigen::MatrixXd d_h3 = d_logits * m.head_weights.transpose();
    Eigen::MatrixXd d_h2 = d_h3; // residual skip
    d_h2 += layer_backward(m.layer3, c.l3, c.h2, d_h3, g.layer3);
    Eigen::MatrixXd d_h1 = d_h2; // residual skip
    d_h1 += layer_backward(m.layer2, c.l2, c.h1, d_h2, g.layer2);
    layer_backward(m.layer1, c.l1, c.input, d_h1, g.layer1);
    return g;
}

/// Decoupled-weight-decay Adam state and update for one tensor.
template <typename Tensor>
class AdamState {
public:
    void step(Tensor& param, const Tensor& grad, const TrainConfig& cfg, double bias1,
              double bias2)
    {
        if (moment1_.size() == 0) {
            moment1_ = Tensor::Zero(param.rows(), param.cols());
            moment2_ = Tensor::Zero(param.rows(), param.cols());
        }
        moment1_ = cfg.adam_beta1 * moment1_ + (1.0 - cfg.adam_beta1) * grad;
        moment2_ = (cfg.adam_beta2 * moment2_.array() +
                    (1.0 - cfg.adam_beta2) * grad.array().square())
                       .matrix();
        param.array() -= cfg.learning_rate *
                         ((moment1_.array() / bias1) /
                              ((moment2_.array() / bias2).sqrt() + cfg.adam_epsilon) +
                          cfg.weight_decay * param.array());
    }

private:
    Tensor moment1_, moment2_;
};

class ScalarAdam {
public:
    void step(double& param, double grad, const TrainConfig& cfg, double bias1, double bias2)
    {
        m_ = cfg.adam_beta1 * m_ + (1.0 - cfg.adam_beta1) * grad;
        v_ = cfg.adam_beta2 * v_ + (1.0 - cfg.adam_beta2) * grad * grad;
        param -= cfg.learning_rate *
                 ((m_ / bias1) / (std::sqrt(v_ / bias2) + cfg.adam_epsilon) +
                  cfg.weight_decay * param);
    }

private:
    double m_ = 0.0, v_ = 0.0;
};

struct LayerAdam {
    AdamState<Eigen::MatrixXd> weights;
    AdamState<Eigen::VectorXd> bias, gain, offset;

    void step(LayerParams& p, const LayerGradients& g, const TrainConfig& cfg, double bias1,
              double bias2)
    {
        weights.step(p.weights, g.weights, cfg, bias1, bias2);
        bias.step(p.bias, g.bias, cfg, bias1, bias2);
        gain.step(p.gain, g.gain, cfg, bias1, bias2);
        offset.step(p.offset, g.offset, cfg, bias1, bias2);
    }
};

struct Optimizer {
    LayerAdam l1, l2, l3;
    AdamState<Eigen::VectorXd> head_weights;
    ScalarAdam head_bias;
    std::size_t steps = 0;

    void apply(ModelParams& m, const ModelGradients& g, const TrainConfig& cfg)
    {
        ++steps;
        const double bias1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(steps));
        const double bias2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(steps));
        l1.step(m.layer1, g.layer1, cfg, bias1, bias2);
        l2.step(m.layer2, g.layer2, cfg, bias1, bias2);
        l3.step(m.layer3, g.layer3, cfg, bias1, bias2);
        head_weights.step(m.head_weights, g.head_weights, cfg, bias1, bias2);
        head_bias.step(m.head_bias, g.head_bias, cfg, bias1, bias2);
    }
};

double distance_from(const std::vector<double>& rho, const std::vector<double>& loss)
{
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v)
            s += x;
        return s / static_cast<double>(v.size());
    };
    auto range = [](const std::vector<double>& v) {
        return *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
    };
    const double rho_hat = std::hypot(1.0 - mean(rho), range(rho));
    const double loss_hat = std::hypot(mean(loss), range(loss));
    return std::hypot(rho_hat, loss_hat);
}

struct Split {
    Eigen::MatrixXd inputs;
    Eigen::VectorXd targets; // [0,1]
};

struct SplitStats {
    double loss15 = 0.0;
    double rho = 0.0;
};

SplitStats evaluate_split(const ModelParams& m, const Split& split)
{
    SplitStats out;
    if (split.targets.size() == 0)
        return out;
    const Eigen::VectorXd y = forward_batch(m, split.inputs);
    out.loss15 =
        4.0 * std::sqrt((y - split.targets).squaredNorm() /
                        static_cast<double>(split.targets.size()));
    out.rho = pearson(y, split.targets);
    return out;
}

} // namespace

ModelParams init_model(std::uint64_t seed, int input_dim)
{
    if (input_dim < 1)
        throw DataError("init_model: input_dim must be at least 1");
    Rng rng(seed);
    ModelParams m;
    m.input_dim = input_dim;
    m.layer1 = init_layer(rng, input_dim, kHidden);
    m.layer2 = init_layer(rng, kHidden, kHidden);
    m.layer3 = init_layer(rng, kHidden, kHidden);
    m.head_weights.resize(kHidden);
    for (int i = 0; i < kHidden; ++i)
        m.head_weights(i) =
            (2.0 * rng.unit() - 1.0) / std::sqrt(static_cast<double>(kHidden));
    m.head_bias = 0.0;
    return m;
}

Eigen::VectorXd forward_batch(const ModelParams& model, const Eigen::MatrixXd& inputs)
{
    if (inputs.cols() != model.input_dim)
        throw DataError("forward: feature dimension mismatch");
    return forward_cached(model, inputs).output;
}

ModelGradients compute_gradients(const ModelParams& model, const Eigen::MatrixXd& inputs,
                                 const Eigen::VectorXd& targets)
{
    if (inputs.cols() != model.input_dim || inputs.rows() != targets.size())
        throw DataError("compute_gradients: shape mismatch");
    return backward(model, forward_cached(model, inputs), targets);
}

double forward(const ModelParams& model, const std::vector<double>& normalized_features)
{
    Eigen::MatrixXd x(1, static_cast<Eigen::Index>(normalized_features.size()));
    for (std::size_t i = 0; i < normalized_features.size(); ++i)
        x(0, static_cast<Eigen::Index>(i)) = normalized_features[i];
    return forward_batch(model, x)(0);
}

double overall_distance(const std::array<double, 3>& rho, const std::array<double, 3>& loss)
{
    return distance_from({rho[0], rho[1], rho[2]}, {loss[0], loss[1], loss[2]});
}

std::size_t select_epoch(const std::vector<EpochStats>& history)
{
    if (history.empty())
        throw DataError("select_epoch: empty history");
    std::size_t best = 0;
    for (std::size_t i = 1; i < history.size(); ++i)
        if (history[i].distance < history[best].distance)
            best = i;
    return best;
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    const Eigen::Index n = a.size();
    if (n == 0 || b.size() != n)
        return 0.0;
    const double ma = a.mean();
    const double mb = b.mean();
    const Eigen::ArrayXd da = a.array() - ma;
    const Eigen::ArrayXd db = b.array() - mb;
    const double denom = std::sqrt(da.square().sum() * db.square().sum());
    if (denom < 1e-30)
        return 0.0;
    return (da * db).sum() / denom;
}

std::pair<ModelParams, TrainHistory> train(const FeatureTable& table, const TrainConfig& config)
{
    if (!table.normalized || !table.scaler)
        throw DataError("train: table must be normalized first");
    if (config.epochs == 0)
        throw DataError("train: epochs must be at least 1");

    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        if (row.features.augmented && !config.include_references)
            continue;
        if (row.features.subset == "train")
            train_rows.push_back(i);
        else if (row.features.subset == "test")
            test_rows.push_back(i);
    }
    if (train_rows.size() < 2)
        throw DataError("train: need at least two training rows");

    auto target_of = [&](std::size_t i) {
        const auto v = table.rows[i].labels.by_target(config.target);
        if (!v)
            throw DataError("row " + std::to_string(i) + " lacks a '" + config.target +
                            "' label");
        return smos_to_unit(*v);
    };

    // validation: last 10% of the training rows under a seed-determined
    // permutation
    std::vector<std::size_t> order(train_rows.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    Rng perm_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
    for (std::size_t i = order.size() - 1; i > 0; --i)
        std::swap(order[i], order[perm_rng.next() % (i + 1)]);

    std::size_t n_val = static_cast<std::size_t>(
        std::llround(config.val_fraction * static_cast<double>(train_rows.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, train_rows.size() - 1);

    auto build_split = [&](const std::vector<std::size_t>& indices) {
        Split split;
        split.inputs.resize(static_cast<Eigen::Index>(indices.size()), kFeatureCount);
        split.targets.resize(static_cast<Eigen::Index>(indices.size()));
        for (std::size_t r = 0; r < indices.size(); ++r) {
            const auto& values = table.rows[indices[r]].features.values;
            for (std::size_t c = 0; c < kFeatureCount; ++c)
                split.inputs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    values[c];
            split.targets(static_cast<Eigen::Index>(r)) = target_of(indices[r]);
        }
        return split;
    };

    std::vector<std::size_t> fit_rows, val_rows;
    for (std::size_t i = 0; i < order.size(); ++i) {
        const std::size_t row = train_rows[order[i]];
        if (i + n_val >= order.size())
            val_rows.push_back(row);
        else
            fit_rows.push_back(row);
    }
    const Split fit = build_split(fit_rows);
    const Split val = build_split(val_rows);
    const Split test = build_split(test_rows);
    const bool with_test = config.select_with_test && !test_rows.empty();

    ModelParams model = init_model(config.seed, kFeatureCount);
    model.scaler = *table.scaler;
    model.config = config;
    Optimizer optimizer;

    TrainHistory history;
    ModelParams best_model = model;
    double best_distance = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;

    std::size_t epoch_budget = config.epochs;
    ForwardCache cache = forward_cached(model, fit.inputs);

    for (std::size_t epoch = 0; epoch < epoch_budget; ++epoch) {
        const double train_rmse =
            std::sqrt((cache.output - fit.targets).squaredNorm() /
                      static_cast<double>(fit.targets.size()));
        if (!std::isfinite(train_rmse))
            throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));

        const ModelGradients grads = backward(model, cache, fit.targets);
        optimizer.apply(model, grads, config);

        // post-update metrics; the training forward doubles as the next
        // epoch's gradient pass
        cache = forward_cached(model, fit.inputs);
        EpochStats stats;
        stats.loss_train = 4.0 * std::sqrt((cache.output - fit.targets).squaredNorm() /
                                           static_cast<double>(fit.targets.size()));
        stats.rho_train = pearson(cache.output, fit.targets);
        const SplitStats vs = evaluate_split(model, val);
        stats.loss_val = vs.loss15;
        stats.rho_val = vs.rho;
        if (with_test) {
            const SplitStats ts = evaluate_split(model, test);
            stats.loss_test = ts.loss15;
            stats.rho_test = ts.rho;
            stats.distance =
                distance_from({stats.rho_train, stats.rho_val, stats.rho_test},
                              {stats.loss_train, stats.loss_val, stats.loss_test});
        } else {
            stats.distance = distance_from({stats.rho_train, stats.rho_val},
                                           {stats.loss_train, stats.loss_val});
        }
        if (!std::isfinite(stats.distance))
            throw NumericError("non-finite distance at epoch " + std::to_string(epoch));
        history.epochs.push_back(stats);

        if (stats.distance < best_distance) {
            best_distance = stats.distance;
            best_epoch = epoch;
            best_model = model;
        }

        // still improving after the scheduled run: extend once
        if (epoch + 1 == epoch_budget && config.extend_if_improving && !history.extended &&
            best_epoch + 1 > epoch_budget - epoch_budget / 10) {
            epoch_budget += config.epochs;
            history.extended = true;
        }
    }

    best_model.selected_epoch = best_epoch;
    history.selected_epoch = best_epoch;
    return {std::move(best_model), std::move(history)};
}

double predict(const ModelParams& model, const FeatureVector& raw)
{
    if (model.schema != kModelSchema)
        throw DataError("model schema mismatch: " + model.schema + " (expected " +
                        std::string(kModelSchema) + ")");
    if (model.input_dim != static_cast<int>(kFeatureCount))
        throw DataError("model input dimension does not match the feature schema");

    std::vector<double> normalized(kFeatureCount);
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        normalized[i] = model.scaler.to_unit(i, raw.values[i]); // no clamping
    return unit_to_smos(forward(model, normalized));
}

namespace {

json vector_to_json(const Eigen::VectorXd& v)
{
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i)
        arr.push_back(v(i));
    return arr;
}

json matrix_to_json(const Eigen::MatrixXd& m)
{
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::VectorXd vector_from_json(const json& arr)
{
    Eigen::VectorXd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
    return v;
}

Eigen::MatrixXd matrix_from_json(const json& rows)
{
    if (rows.empty())
        return {};
    Eigen::MatrixXd m(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                rows[r][c].get<double>();
    return m;
}

json layer_to_json(const LayerParams& p)
{
    return {{"weights", matrix_to_json(p.weights)},
            {"bias", vector_to_json(p.bias)},
            {"gain", vector_to_json(p.gain)},
            {"offset", vector_to_json(p.offset)}};
}

LayerParams layer_from_json(const json& j)
{
    LayerParams p;
    p.weights = matrix_from_json(j.at("weights"));
    p.bias = vector_from_json(j.at("bias"));
    p.gain = vector_from_json(j.at("gain"));
    p.offset = vector_from_json(j.at("offset"));
    return p;
}

json config_to_json(const TrainConfig& c)
{
    return {{"seed", c.seed},
            {"epochs", c.epochs},
            {"learning_rate", c.learning_rate},
            {"weight_decay", c.weight_decay},
            {"adam_beta1", c.adam_beta1},
            {"adam_beta2", c.adam_beta2},
            {"adam_epsilon", c.adam_epsilon},
            {"val_fraction", c.val_fraction},
            {"target", c.target},
            {"include_references", c.include_references},
            {"select_with_test", c.select_with_test},
            {"extend_if_improving", c.extend_if_improving}};
}

TrainConfig config_from_json(const json& j)
{
    TrainConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.adam_beta1 = j.at("adam_beta1").get<double>();
    c.adam_beta2 = j.at("adam_beta2").get<double>();
    c.adam_epsilon = j.at("adam_epsilon").get<double>();
    c.val_fraction = j.at("val_fraction").get<double>();
    c.target = j.at("target").get<std::string>();
    c.include_references = j.at("include_references").get<bool>();
    c.select_with_test = j.at("select_with_test").get<bool>();
    c.extend_if_improving = j.at("extend_if_improving").get<bool>();
    return c;
}

} // namespace

void save_model(const ModelParams& model, const TrainHistory& history, const std::string& path)
{
    json j;
    j["schema"] = model.schema;
    j["input_dim"] = model.input_dim;
    j["selected_epoch"] = model.selected_epoch;
    j["config"] = config_to_json(model.config);

    json names = json::array();
    for (const auto& n : kFeatureNames)
        names.push_back(std::string(n));
    j["scaler"] = {{"names", names},
                   {"min", std::vector<double>(model.scaler.min.begin(), model.scaler.min.end())},
                   {"max", std::vector<double>(model.scaler.max.begin(), model.scaler.max.end())}};

    j["layers"] = {{"layer1", layer_to_json(model.layer1)},
                   {"layer2", layer_to_json(model.layer2)},
                   {"layer3", layer_to_json(model.layer3)}};
    j["head"] = {{"weights", vector_to_json(model.head_weights)}, {"bias", model.head_bias}};

    if (!history.epochs.empty()) {
        const auto& sel = history.epochs[history.selected_epoch];
        j["history_summary"] = {
            {"epochs_trained", history.epochs.size()},
            {"extended", history.extended},
            {"selected_epoch", history.selected_epoch},
            {"selected", {{"loss_train", sel.loss_train},
                          {"loss_val", sel.loss_val},
                          {"loss_test", sel.loss_test},
                          {"rho_train", sel.rho_train},
                          {"rho_val", sel.rho_val},
                          {"rho_test", sel.rho_test},
                          {"distance", sel.distance}}},
        };
    }

    std::ofstream file(path);
    if (!file)
        throw DataError("cannot write model file: " + path);
    file << j.dump(1) << '\n';
    if (!file)
        throw DataError("write failed: " + path);
}

ModelParams load_model(const std::string& path)
{
    std::ifstream file(path);
    if (!file)
        throw DataError("cannot open model file: " + path);
    json j;
    try {
        file >> j;
    } catch (const json::exception& e) {
        throw DataError("malformed model file " + path + ": " + e.what());
    }

    ModelParams m;
    m.schema = j.at("schema").get<std::string>();
    if (m.schema != kModelSchema)
        throw DataError("model schema mismatch in " + path + ": " + m.schema);
    m.input_dim = j.at("input_dim").get<int>();
    m.selected_epoch = j.at("selected_epoch").get<std::size_t>();
    m.config = config_from_json(j.at("config"));
    const auto& scaler = j.at("scaler");
    const auto mins = scaler.at("min").get<std::vector<double>>();
    const auto maxs = scaler.at("max").get<std::vector<double>>();
    if (mins.size() != kFeatureCount || maxs.size() != kFeatureCount)
        throw DataError("model scaler size mismatch in " + path);
    std::copy(mins.begin(), mins.end(), m.scaler.min.begin());
    std::copy(maxs.begin(), maxs.end(), m.scaler.max.begin());
    m.layer1 = layer_from_json(j.at("layers").at("layer1"));
    m.layer2 = layer_from_json(j.at("layers").at("layer2"));
    m.layer3 = layer_from_json(j.at("layers").at("layer3"));
    m.head_weights = vector_from_json(j.at("head").at("weights"));
    m.head_bias = j.at("head").at("bias").get<double>();
    return m;
}

} // namespace tsmq
