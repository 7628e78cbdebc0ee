#include "helpers.hpp"
#include "tsmq/net.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace tsmq;
using namespace tsmq::testing;

namespace {

// independent plain-loop forward pass, deliberately avoiding Eigen
double forward_oracle(const ModelParams& m, const std::vector<double>& x)
{
    auto layer = [](const LayerParams& p, const std::vector<double>& in) {
        const std::size_t out_dim = static_cast<std::size_t>(p.weights.rows());
        std::vector<double> z(out_dim, 0.0);
        for (std::size_t o = 0; o < out_dim; ++o) {
            for (std::size_t i = 0; i < in.size(); ++i)
                z[o] += p.weights(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i)) *
                        in[i];
            z[o] += p.bias(static_cast<Eigen::Index>(o));
        }
        double mean = 0.0;
        for (double v : z)
            mean += v;
        mean /= static_cast<double>(out_dim);
        double var = 0.0;
        for (double v : z)
            var += (v - mean) * (v - mean);
        var /= static_cast<double>(out_dim);
        const double inv = 1.0 / std::sqrt(var + 1e-5);
        std::vector<double> out(out_dim);
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double normalized = (z[o] - mean) * inv;
            const double affine = normalized * p.gain(static_cast<Eigen::Index>(o)) +
                                  p.offset(static_cast<Eigen::Index>(o));
            out[o] = affine > 0.0 ? affine : 0.0;
        }
        return out;
    };

    const std::vector<double> h1 = layer(m.layer1, x);
    std::vector<double> h2 = layer(m.layer2, h1);
    for (std::size_t i = 0; i < h2.size(); ++i)
        h2[i] += h1[i];
    std::vector<double> h3 = layer(m.layer3, h2);
    for (std::size_t i = 0; i < h3.size(); ++i)
        h3[i] += h2[i];
    double s = m.head_bias;
    for (std::size_t i = 0; i < h3.size(); ++i)
        s += m.head_weights(static_cast<Eigen::Index>(i)) * h3[i];
    return 1.0 / (1.0 + std::exp(-s));
}

FeatureTable synthetic_table(std::size_t rows, std::uint64_t seed, double noise_level = 0.1)
{
    TestRng rng(seed);
    FeatureTable table;
    for (std::size_t r = 0; r < rows; ++r) {
        FeatureRow row;
        for (auto& v : row.features.values)
            v = rng.uniform(-2.0, 2.0);
        row.features.subset = r % 10 == 0 ? "test" : "train";
        row.features.method = "synthetic";
        row.features.file_class = "music";
        row.features.beta = rng.uniform(0.3, 1.9);
        // noisy monotone function of SER and MPhNW
        const double a = row.features.values[feature_index("SER")];  // in [-2,2]
        const double b = row.features.values[feature_index("MPhNW")];
        double label = 3.0 + 0.8 * a - 0.6 * b + noise_level * rng.normal();
        label = std::clamp(label, 1.0, 5.0);
        row.labels.smos = label;
        table.rows.push_back(std::move(row));
    }
    return table;
}

} // namespace

TEST_CASE("init_model determinism and shapes")
{
    const ModelParams a = init_model(0, 23);
    const ModelParams b = init_model(0, 23);
    CHECK(a.layer1.weights == b.layer1.weights);
    CHECK(a.layer3.weights == b.layer3.weights);
    CHECK(a.head_weights == b.head_weights);

    const ModelParams c = init_model(1, 23);
    CHECK(a.layer1.weights != c.layer1.weights);

    CHECK(a.layer1.weights.rows() == 128);
    CHECK(a.layer1.weights.cols() == 23);
    CHECK(a.layer2.weights.rows() == 128);
    CHECK(a.layer2.weights.cols() == 128);
    CHECK(a.head_weights.size() == 128);
    CHECK(a.layer1.bias.isZero());
    CHECK(a.layer1.gain.isOnes());
}

TEST_CASE("forward stays in (0,1) and zero weights give 0.5")
{
    ModelParams m = init_model(3, 23);
    TestRng rng(401);
    std::vector<double> x(23);
    for (auto& v : x)
        v = rng.uniform(0.0, 1.0);
    const double y = forward(m, x);
    CHECK(y > 0.0);
    CHECK(y < 1.0);

    m.layer1.weights.setZero();
    m.layer2.weights.setZero();
    m.layer3.weights.setZero();
    m.head_weights.setZero();
    m.head_bias = 0.0;
    CHECK(forward(m, x) == doctest::Approx(0.5));
}

TEST_CASE("forward matches an independently coded oracle")
{
    TestRng rng(402);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const ModelParams m = init_model(seed, 23);
        std::vector<double> x(23);
        for (auto& v : x)
            v = rng.uniform(-0.5, 1.5);
        CHECK(forward(m, x) == doctest::Approx(forward_oracle(m, x)).epsilon(1e-10));
    }
}

TEST_CASE("forward pass is batch-order independent")
{
    const ModelParams m = init_model(9, 23);
    TestRng rng(412);
    Eigen::MatrixXd x(6, 23);
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        for (Eigen::Index c = 0; c < x.cols(); ++c)
            x(r, c) = rng.uniform(-1.0, 1.0);
    const Eigen::VectorXd y = forward_batch(m, x);

    // the single-sample path is exactly reproducible regardless of batch
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        std::vector<double> row(23);
        for (Eigen::Index c = 0; c < x.cols(); ++c)
            row[static_cast<std::size_t>(c)] = x(r, c);
        const double once = forward(m, row);
        const double again = forward(m, row);
        CHECK(once == again);
        // batched evaluation agrees to matmul-kernel rounding
        CHECK(y(r) == doctest::Approx(once).epsilon(1e-12));
    }

    Eigen::MatrixXd reversed(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        reversed.row(r) = x.row(x.rows() - 1 - r);
    const Eigen::VectorXd y_rev = forward_batch(m, reversed);
    for (Eigen::Index r = 0; r < y.size(); ++r)
        CHECK(y(r) == doctest::Approx(y_rev(y.size() - 1 - r)).epsilon(1e-12));
}

TEST_CASE("overall_distance")
{
    CHECK(overall_distance({1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}) == 0.0);
    CHECK(overall_distance({1.0, 1.0, 1.0}, {1.0, 1.0, 1.0}) == doctest::Approx(1.0));
    CHECK(overall_distance({0.9, 0.8, 0.7}, {0.5, 0.6, 0.4}) ==
          doctest::Approx(0.6082762530298219).epsilon(1e-12));
}

TEST_CASE("select_epoch")
{
    auto stats = [](double d) {
        EpochStats s;
        s.distance = d;
        return s;
    };
    CHECK(select_epoch({stats(0.9), stats(0.5), stats(0.1)}) == 2);
    CHECK(select_epoch({stats(0.5), stats(0.2), stats(0.2)}) == 1); // earliest tie
    SUBCASE("appending worse epochs never changes the winner")
    {
        std::vector<EpochStats> h = {stats(0.5), stats(0.2), stats(0.4)};
        const std::size_t before = select_epoch(h);
        h.push_back(stats(0.9));
        h.push_back(stats(0.3));
        CHECK(select_epoch(h) == before);
    }
    SUBCASE("random histories match a linear scan")
    {
        TestRng rng(403);
        for (int t = 0; t < 20; ++t) {
            std::vector<EpochStats> h;
            for (int e = 0; e < 50; ++e)
                h.push_back(stats(rng.uniform(0.0, 1.0)));
            std::size_t best = 0;
            for (std::size_t e = 0; e < h.size(); ++e)
                if (h[e].distance < h[best].distance)
                    best = e;
            CHECK(select_epoch(h) == best);
        }
    }
}

TEST_CASE("analytic gradients match central finite differences")
{
    // five-row table, every parameter tensor probed at a few entries
    FeatureTable table = normalize(synthetic_table(24, 404));
    // use only 5 rows for the check
    table.rows.resize(5);
    for (auto& row : table.rows)
        row.features.subset = "train";

    Eigen::MatrixXd x(5, kFeatureCount);
    Eigen::VectorXd t(5);
    for (std::size_t r = 0; r < 5; ++r) {
        for (std::size_t c = 0; c < kFeatureCount; ++c)
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                table.rows[r].features.values[c];
        t(static_cast<Eigen::Index>(r)) = smos_to_unit(*table.rows[r].labels.smos);
    }

    ModelParams m = init_model(5, kFeatureCount);
    const ModelGradients grads = compute_gradients(m, x, t);

    auto loss_at = [&](const ModelParams& probe) {
        const Eigen::VectorXd y = forward_batch(probe, x);
        return std::sqrt((y - t).squaredNorm() / 5.0);
    };

    const double step = 1e-5;
    double max_rel_err = 0.0;
    auto probe_matrix = [&](Eigen::MatrixXd& param, const Eigen::MatrixXd& grad) {
        // probe a deterministic subset of entries
        for (Eigen::Index idx = 0; idx < param.size(); idx += std::max<Eigen::Index>(1, param.size() / 37)) {
            const Eigen::Index r = idx % param.rows();
            const Eigen::Index c = idx / param.rows();
            const double saved = param(r, c);
            param(r, c) = saved + step;
            const double up = loss_at(m);
            param(r, c) = saved - step;
            const double down = loss_at(m);
            param(r, c) = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double analytic = grad(r, c);
            // denominator floors at the finite-difference resolution:
        // near-zero gradients agree only to the eps*loss/step noise level
        const double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-6});
            max_rel_err = std::max(max_rel_err, std::fabs(numeric - analytic) / denom);
        }
    };
    auto probe_vector = [&](Eigen::VectorXd& param, const Eigen::VectorXd& grad) {
        for (Eigen::Index i = 0; i < param.size();
             i += std::max<Eigen::Index>(1, param.size() / 37)) {
            const double saved = param(i);
            param(i) = saved + step;
            const double up = loss_at(m);
            param(i) = saved - step;
            const double down = loss_at(m);
            param(i) = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double analytic = grad(i);
            // denominator floors at the finite-difference resolution:
        // near-zero gradients agree only to the eps*loss/step noise level
        const double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-6});
            max_rel_err = std::max(max_rel_err, std::fabs(numeric - analytic) / denom);
        }
    };

    probe_matrix(m.layer1.weights, grads.layer1.weights);
    probe_vector(m.layer1.bias, grads.layer1.bias);
    probe_vector(m.layer1.gain, grads.layer1.gain);
    probe_vector(m.layer1.offset, grads.layer1.offset);
    probe_matrix(m.layer2.weights, grads.layer2.weights);
    probe_vector(m.layer2.bias, grads.layer2.bias);
    probe_matrix(m.layer3.weights, grads.layer3.weights);
    probe_vector(m.layer3.gain, grads.layer3.gain);
    probe_vector(m.head_weights, grads.head_weights);
    {
        const double saved = m.head_bias;
        m.head_bias = saved + step;
        const double up = loss_at(m);
        m.head_bias = saved - step;
        const double down = loss_at(m);
        m.head_bias = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double denom = std::max({std::fabs(numeric), std::fabs(grads.head_bias), 1e-8});
        max_rel_err = std::max(max_rel_err, std::fabs(numeric - grads.head_bias) / denom);
    }
    CHECK(max_rel_err < 1e-4);
}

TEST_CASE("training learns a synthetic monotone target")
{
    const FeatureTable table = normalize(synthetic_table(50, 405, 0.02));
    TrainConfig config;
    config.seed = 0;
    config.epochs = 400;
    config.extend_if_improving = false;
    auto [model, history] = train(table, config);

    // loss trend: first epochs decrease
    bool decreasing = true;
    for (std::size_t e = 1; e < 50; ++e)
        if (history.epochs[e].loss_train > history.epochs[e - 1].loss_train + 1e-6)
            decreasing = false;
    CHECK(decreasing);
    CHECK(history.epochs.back().loss_train < history.epochs.front().loss_train);
}

TEST_CASE("training is exactly reproducible")
{
    const FeatureTable table = normalize(synthetic_table(40, 406));
    TrainConfig config;
    config.seed = 7;
    config.epochs = 25;
    auto [model_a, history_a] = train(table, config);
    auto [model_b, history_b] = train(table, config);
    REQUIRE(history_a.epochs.size() == history_b.epochs.size());
    for (std::size_t e = 0; e < history_a.epochs.size(); ++e) {
        CHECK(history_a.epochs[e].loss_train == history_b.epochs[e].loss_train);
        CHECK(history_a.epochs[e].distance == history_b.epochs[e].distance);
    }
    CHECK(model_a.layer1.weights == model_b.layer1.weights);
    CHECK(model_a.head_weights == model_b.head_weights);
}

TEST_CASE("predict maps through scaler and output bounds")
{
    const FeatureTable table = normalize(synthetic_table(40, 407));
    TrainConfig config;
    config.seed = 1;
    config.epochs = 10;
    auto [model, history] = train(table, config);

    TestRng rng(408);
    FeatureVector raw;
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        raw.values[i] = rng.uniform(-2.0, 2.0);
    const double omos = predict(model, raw);
    CHECK(omos > 1.0);
    CHECK(omos < 5.0);

    SUBCASE("schema mismatch is rejected")
    {
        ModelParams wrong = model;
        wrong.schema = "tsmq.model.v0";
        CHECK_THROWS_AS(predict(wrong, raw), DataError);
    }
}

TEST_CASE("model file round trip is bit exact")
{
    const FeatureTable table = normalize(synthetic_table(30, 409));
    TrainConfig config;
    config.seed = 2;
    config.epochs = 8;
    auto [model, history] = train(table, config);

    const std::string path =
        (std::filesystem::temp_directory_path() / "tsmq_model.json").string();
    save_model(model, history, path);
    const ModelParams loaded = load_model(path);

    CHECK(loaded.layer1.weights == model.layer1.weights);
    CHECK(loaded.layer2.bias == model.layer2.bias);
    CHECK(loaded.layer3.gain == model.layer3.gain);
    CHECK(loaded.head_weights == model.head_weights);
    CHECK(loaded.head_bias == model.head_bias);
    CHECK(loaded.selected_epoch == model.selected_epoch);
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
        CHECK(loaded.scaler.min[i] == model.scaler.min[i]);
        CHECK(loaded.scaler.max[i] == model.scaler.max[i]);
    }

    // identical predictions after the round trip
    TestRng rng(410);
    FeatureVector raw;
    for (std::size_t i = 0; i < kFeatureCount; ++i)
        raw.values[i] = rng.uniform(-1.0, 1.0);
    CHECK(predict(loaded, raw) == predict(model, raw));
    std::remove(path.c_str());
}

TEST_CASE("train rejects bad input")
{
    FeatureTable raw = synthetic_table(10, 411);
    TrainConfig config;
    CHECK_THROWS_AS(train(raw, config), DataError); // not normalized

    FeatureTable normalized = normalize(raw);
    for (auto& row : normalized.rows)
        row.labels.smos.reset();
    CHECK_THROWS_AS(train(normalized, config), DataError); // no labels

    FeatureTable tiny = normalize(raw);
    tiny.rows.resize(1);
    CHECK_THROWS_AS(train(tiny, config), DataError); // empty split
}
